console.log('fonts ok');
